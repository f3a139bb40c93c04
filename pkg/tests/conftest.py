import pytest

from edbn import AttributeSchema, build_k_context, parse_log

# The running worked example: a permission-request process with three normal
# traces (15 events) and one anomalous trace where an employee acts with the
# manager role.  Event ids are positional (0..19 in file order).
PERMISSION_ROWS = """\
Time,ID,Type,Activity,UserID,UserName,UserRole,tID
0,0,User-Actions,Log in,001,User1,employee,1
1,1,User-Actions,Logged in,001,User1,employee,1
1,2,Request Permission,Create Request,001,User1,employee,1
2,3,Request Permission,Send Mail,001,User1,employee,1
3,4,User-Actions,Log in,001,User1,employee,2
4,5,User-Actions,Logged in,001,User1,employee,2
6,6,Request Permission,Create Request,001,User1,employee,2
7,7,Request Permission,Send Mail,001,User1,employee,2
8,8,Request Permission,Disapproved,002,User2,manager,2
9,9,User-Actions,Log in,003,User3,employee,3
10,10,User-Actions,Logged in,003,User3,employee,3
10,11,Request Permission,Create Request,003,User3,employee,3
11,12,Request Permission,Approved,002,User2,manager,1
12,13,Request Permission,Send Mail,003,User3,employee,3
17,14,Request Permission,Approved,004,User4,sales-manager,3
"""

PERMISSION_ANOMALOUS_ROWS = """\
18,12,User-Actions,Log in,001,User1,manager,4
19,13,User-Actions,Logged in,001,User1,manager,4
20,14,Request Permission,Create Request,001,User1,manager,4
21,15,Request Permission,Approved,001,User1,manager,4
21,16,Request Permission,Send Mail,001,User1,manager,4
"""

PERMISSION_ROWS_FULL = PERMISSION_ROWS + PERMISSION_ANOMALOUS_ROWS

ATTRS = ("Type", "Activity", "UserID", "UserName", "UserRole")


@pytest.fixture(scope="session")
def permission_schema():
    return AttributeSchema(names=ATTRS, trace_id_column="tID")


@pytest.fixture(scope="session")
def permission_log(permission_schema):
    return parse_log(PERMISSION_ROWS, permission_schema)


@pytest.fixture(scope="session")
def permission_full_log(permission_schema):
    return parse_log(PERMISSION_ROWS_FULL, permission_schema)


@pytest.fixture(scope="session")
def permission_ctx(permission_log):
    return build_k_context(permission_log, 1)
